import sys

from densecell.cli import main

sys.exit(main())
