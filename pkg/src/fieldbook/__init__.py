"""Self-hosted farm activity records: typed tables, validated conditional
entry forms, role-based sharing with submit-only form links, and tidy CSV."""

__version__ = "0.1.0"
