import sys

from hydrofriction.cli import main

sys.exit(main())
