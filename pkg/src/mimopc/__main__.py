import sys

from mimopc.cli import main

sys.exit(main())
