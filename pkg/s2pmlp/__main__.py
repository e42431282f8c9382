import sys

from s2pmlp.cli import main

if __name__ == "__main__":
    sys.exit(main())
