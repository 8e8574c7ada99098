import sys

from fkglab.cli import main

sys.exit(main())
