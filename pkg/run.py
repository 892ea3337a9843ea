#!/usr/bin/env python3
# run.py

import sys

from urducorpus.cli import main

if __name__ == '__main__':
    main(sys.argv[1:])
