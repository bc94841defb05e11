# -*- coding: utf-8 -*-
#
# pyroomnav documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.

import os
import sys

on_rtd = os.environ.get("READTHEDOCS", None) == "True"

package_root = os.path.abspath("../..")
sys.path.insert(0, package_root)
print("Add package root to sys.path: %r" % package_root)

# -- General configuration ------------------------------------------------

extensions = [
    "myst_parser",
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.todo",
    "sphinx.ext.viewcode",
    "sphinx.ext.inheritance_diagram",
    "sphinx.ext.napoleon",
]

rst_epilog = """
.. |br| raw:: html

   <br />

.. role:: bash(code)
   :language: bash
"""

templates_path = ["_templates"]
source_suffix = [".rst", ".md"]
master_doc = "index"

project = "pyroomnav"
copyright = "2024, pyroomnav contributors"
author = "pyroomnav contributors"

# The version info is read from the package, so docs build without installing it.
g_dict = {}
with open("../../roomnav/__init__.py") as f:
    exec(f.read(), g_dict)
release = g_dict["__version__"]
del g_dict
version = ".".join(release.split(".")[:2])

language = "en"
exclude_patterns = ["_build"]
pygments_style = "sphinx"
todo_include_todos = True

autodoc_member_order = "bysource"
intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
}

# -- Options for HTML output ----------------------------------------------

if not on_rtd:
    # only import and set the theme if we're building docs locally
    import sphinx_rtd_theme

    html_theme = "sphinx_rtd_theme"
    html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]

htmlhelp_basename = "pyroomnavdoc"
