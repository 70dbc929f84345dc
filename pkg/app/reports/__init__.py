"""Report assembly and output files."""
