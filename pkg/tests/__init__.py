# Test package; conftest.py puts the repo root on sys.path for the app imports.
