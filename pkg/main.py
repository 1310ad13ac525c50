#!/usr/bin/env python3
"""Entry point for the deep adaptive writer identification toolkit."""

from deepadapt.cli import main

if __name__ == "__main__":
    main()
