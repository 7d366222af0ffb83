import sys

from eventfusion.cli import main

if __name__ == "__main__":
    # Same commands as `python -m eventfusion`
    sys.exit(main())
