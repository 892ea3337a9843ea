import sys

from urducorpus.cli import main

main(sys.argv[1:])
