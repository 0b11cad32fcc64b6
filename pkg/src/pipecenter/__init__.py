"""In-pipe centering from two sonar points."""
__version__ = "0.1.0"
