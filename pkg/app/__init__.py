"""PolyFrameLab - polynomial frame approximation on irregular domains."""

__version__ = "0.1.0"
__app_name__ = "PolyFrameLab"
