#!/usr/bin/env python
# -*- coding: utf-8 -*-
from setuptools import setup

setup(
    name="pyroomnav",  # GitHub dependants needs it in setup.py?
    # See setup.cfg
)
