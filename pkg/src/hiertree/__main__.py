import sys

from hiertree.cli import main

sys.exit(main())
