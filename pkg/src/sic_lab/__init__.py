"""Inband full-duplex SIC testbed.

Simulates a transceiver whose self-interference model is trained through the
receiver ADC, with four wiring options for how the ADC is treated during
backpropagation (saturation-aware, straight-through, AGC-assisted, and offline
digital training), plus an OFDM/16-QAM link for end-to-end BER evaluation.
"""

__version__ = "0.1.0"
