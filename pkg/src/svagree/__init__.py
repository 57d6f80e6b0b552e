"""Subject-verb number agreement toolkit.

Mines agreement instances from dependency-parsed corpora, trains small
recurrent networks (LSTM/SRN) from scratch under four supervision regimes,
and evaluates them with attractor-stratified analyses and probes.
"""

__version__ = "0.1.0"
