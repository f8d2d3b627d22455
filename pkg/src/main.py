import sys

from decaycert.scenario import runner

if __name__ == "__main__":
    sys.exit(runner.main())
