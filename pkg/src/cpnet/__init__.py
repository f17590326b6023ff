"""Simulator and algorithms for core-periphery networks in the CONGEST model."""
from .engine import (CapacityViolation, CongestError, Engine, Envelope, NonAdjacentSend,
                     Payload, PayloadOverflow, RoundLimitExceeded)
from .topology import PartitionedNetwork, from_edges, from_spec, load_network, save_network

__version__ = "0.1.0"
