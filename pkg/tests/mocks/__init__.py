# tests/mocks/__init__.py
