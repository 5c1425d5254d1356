import sys

from mfsi.cli import main

sys.exit(main())
