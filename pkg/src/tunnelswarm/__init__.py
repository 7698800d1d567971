"""Deterministic simulator of decentralized multi-robot tunnel excavation.

Robots ferry pellets between a home zone and a dig face in a narrow planar
tunnel.  One robot may be faulty (powered off, blocking traffic).  Active
robots either treat every contact as a wall (baseline) or keep a private
contact map that lets them recognize the blocker and push it aside.
"""

from tunnelswarm.contact_map import ContactMap, MapParams

__all__ = ["ContactMap", "MapParams"]
__version__ = "0.1.0"
