"""
Runtime hook for PyInstaller builds: puts the bundle root on sys.path and points
the sample-data lookup at the bundled copy. Runs before app/main.py.
"""
import os
import sys

if getattr(sys, 'frozen', False):
    bundle_dir = getattr(sys, '_MEIPASS', None)
    if bundle_dir:
        if str(bundle_dir) not in sys.path:
            sys.path.insert(0, str(bundle_dir))
        os.environ.setdefault("HAB_STATION_SAMPLE_DIR", os.path.join(bundle_dir, "data", "sample"))
