# src/uavmec/models/__init__.py
