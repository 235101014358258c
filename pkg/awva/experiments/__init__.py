"""
Experiment layer: sweep configs, scope CSV import, CSV output and the CLI
"""
