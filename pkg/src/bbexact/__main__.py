import sys

from bbexact.cli import main

sys.exit(main())
