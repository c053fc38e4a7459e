import sys

from credinfer.cli import main

sys.exit(main())
