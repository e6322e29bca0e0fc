"""
Command-line front end of the DPS-QKD simulator.

Subcommands: simulate, sweep, attack-report, budget, fit.
"""
