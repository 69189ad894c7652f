import sys
from pathlib import Path

# Run from the build tree: the package sources sit one level up while the
# compiled extension arrives through PYTHONPATH.
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
