"""
M-state DPS-QKD simulator.

Monte-Carlo and closed-form models of differential phase-shift QKD with
N-bin time-bin superposition states, a single time-multiplexed gated
detector, temporal guard bands and intercept-resend / beam-splitting
eavesdroppers.
"""

__version__ = "0.1.0"
