"""PolyFrameLab - Core package."""
