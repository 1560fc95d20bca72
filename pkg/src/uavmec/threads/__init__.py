# src/uavmec/threads/__init__.py
