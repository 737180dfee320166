"""Flying base station latency simulator for offshore wind farm monitoring.

Core package: scenario handling, channel construction, route planning,
access timing, the SINR/rate/latency forward model, and the alternating
beamforming / power-allocation optimizer. A FastAPI service wraps the
pipeline; the CLI is a thin client of that service.
"""

__version__ = "0.1.0"
