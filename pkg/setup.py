# -*- coding: utf-8 -*-

import os
from setuptools import (
    find_packages,
    setup,
)
import subprocess

test_deps = [
    'pytest>=7.0,<9',
    'pytest-cov>=4.0,<6',
    'pytest-xdist>=3.0,<4',
    'tox>=4.0,<5',
    'hypothesis>=6.0,<7',
]
lint_deps = [
    'flake8>=6.0,<8',
    'flake8-bugbear>=23.0',
    'flake8-use-fstring>=1.0.0,<2.0.0',
    'isort>=5.0,<6',
    'mypy>=1.0,<2',
]


extras = {
    'test': test_deps,
    'lint': lint_deps,
}

hash_file_rel_path = os.path.join('soliton_lab', 'soliton_lab_git_version.txt')
hashfile = os.path.relpath(hash_file_rel_path)

try:
    commithash = subprocess.check_output("git rev-parse HEAD".split())
    commithash = commithash.decode('utf-8').strip()
    with open(hashfile, 'w') as fh:
        fh.write(commithash)
except (subprocess.CalledProcessError, FileNotFoundError):
    pass

with open('README.md') as fh:
    long_description = fh.read()

setup(
    name='soliton-lab',
    # *IMPORTANT*: Don't manually change the version here. Use the 'bumpversion' utility.
    version='0.1.0',
    description='Soliton Lab: stability certificates and stable-manifold shooting for the cubic NLS',
    long_description=long_description,
    long_description_content_type='text/markdown',
    author='Soliton Lab Team',
    author_email='',
    license="MIT",
    keywords='nonlinear schrodinger soliton spectral stability numerics',
    include_package_data=True,
    packages=find_packages(exclude=('tests', 'docs')),
    python_requires='>=3.9',
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.11',
        'pycryptodome>=3.5.1,<4',
    ],
    tests_require=test_deps,
    extras_require=extras,
    entry_points={
        'console_scripts': [
            "soliton-lab=soliton_lab.cli.soliton_lab:_parse_cli_args",
        ]
    },
    classifiers=[
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    package_data={'soliton_lab': ['soliton_lab_git_version.txt']},
)
