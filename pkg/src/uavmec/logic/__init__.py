# src/uavmec/logic/__init__.py
