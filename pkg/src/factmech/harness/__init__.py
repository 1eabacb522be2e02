"""Configuration, scenario runners, table/chart emitters, and the CLI."""
