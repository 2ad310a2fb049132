"""Spatial slotted random multiple access with multiple departure.

Messages arrive at uniform locations on a sphere of unit area and contend for a
single slotted channel. A successful transmission removes the transmitter and
every waiting message within chord distance ``r`` of it.
"""

from spatial_aloha.geometry import DIAMETER, RADIUS, cap_area, chord_distance
from spatial_aloha.traffic import ArrivalDistribution

__all__ = ["RADIUS", "DIAMETER", "cap_area", "chord_distance", "ArrivalDistribution"]
__version__ = "0.1.0"
