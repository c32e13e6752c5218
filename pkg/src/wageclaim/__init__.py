"""Lost-wage claims system for deactivated rideshare drivers."""

__version__ = "0.1.0"
