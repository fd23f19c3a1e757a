import argparse
import sys

from .adapter import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="maskbridge")
    parser.add_argument("--backend", choices=["echo"], default="echo")
    args = parser.parse_args(argv)
    return serve(sys.stdin, sys.stdout, backend=args.backend)


if __name__ == "__main__":
    sys.exit(main())
