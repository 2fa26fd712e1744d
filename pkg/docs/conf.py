# -*- coding: utf-8 -*-
#
# armlab documentation build configuration file.
#
# Only the values that differ from the sphinx defaults are set here.

import importlib.metadata

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.coverage',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode'
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'armlab'
copyright = u'2023, armlab developers'
author = u'armlab developers'

# The short X.Y version and the full release both come from the installed package
version = importlib.metadata.version("armlab")
release = version

language = 'en'
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = False

# autodoc keeps the reST field lists of the docstrings
autodoc_member_order = 'bysource'

html_theme = 'alabaster'
html_static_path = []
html_sidebars = {
    '**': [
        'about.html',
        'navigation.html',
        'relations.html',
        'searchbox.html',
    ]
}

htmlhelp_basename = 'armlabdoc'

latex_documents = [
    (master_doc, 'armlab.tex', u'armlab Documentation',
     u'armlab developers', 'manual'),
]

man_pages = [
    (master_doc, 'armlab', u'armlab Documentation',
     [author], 1)
]
