# src/uavmec/__init__.py

__version__ = "0.3.1"
