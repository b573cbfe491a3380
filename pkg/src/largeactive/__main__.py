import sys

from largeactive.cli import main

sys.exit(main())
