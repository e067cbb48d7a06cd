"""Latent-variable demand-response scheduling pipeline.

Learns a low-dimensional latent representation of closed-loop plant
operating data, identifies block-oriented dynamic models of the latent
variables, optimizes an hourly production schedule against time-varying
electricity prices in the latent space, and validates the schedule on the
full plant simulator.
"""

__version__ = "0.1.0"
