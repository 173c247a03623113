import sys

from fairbid.cli import main

sys.exit(main())
