import sys

import nccz.cli


def main():
    """Main entry point when running nccz as a module"""
    sys.exit(nccz.cli.run())


if __name__ == "__main__":
    main()
