"""Valuation of securities-lending term loans as binary barrier options."""
