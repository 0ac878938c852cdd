"""Verified-by-bounded-checking expression rewriting on terms and term graphs."""
