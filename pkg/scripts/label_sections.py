#!/usr/bin/env python3
"""
Radiology report section labeling script

Thin wrapper around the section_labeler package command line. See
``python scripts/label_sections.py --help`` for the available commands.
"""

import os
import sys

# Add the current directory to the path so we can import the package
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from section_labeler.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
