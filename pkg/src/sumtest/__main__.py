import sys

from sumtest.cli import main

sys.exit(main())
