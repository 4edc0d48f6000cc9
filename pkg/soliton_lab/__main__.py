#!/usr/bin/env python3
# -*- coding: UTF-8 -*-
from soliton_lab.cli import (
    soliton_lab,
)

if __name__ == "__main__":
    soliton_lab._parse_cli_args()
