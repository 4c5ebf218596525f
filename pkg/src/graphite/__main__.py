import sys
from graphite.cli import main

sys.exit(main())
