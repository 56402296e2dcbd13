"""driftwatch: drift monitoring, root cause mining, and by-cause model
adaptation for a simulated device fleet."""

__version__ = "0.1.0"
