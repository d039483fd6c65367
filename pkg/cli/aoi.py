# cli/aoi.py
import os
import sys

# run from a checkout without installing
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from aoi_priority.cli import main  # noqa: E402


if __name__ == "__main__":
    main()
