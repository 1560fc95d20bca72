# src/uavmec/utils/__init__.py
