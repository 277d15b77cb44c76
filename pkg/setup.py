from setuptools import setup, find_packages
from pathlib import Path

PACKAGE_NAME = 'blowrate'

# make a project data dir and log dir
base_dir = Path(f'~/.{PACKAGE_NAME}').expanduser()

if not base_dir.exists():
    base_dir.mkdir()
    for subdir in ['logs', 'data', 'config']:
        (base_dir / subdir).mkdir()


setup(
    name=PACKAGE_NAME,
    version='0.1.0',
    description='Blow-up rate laboratory for coupled parabolic systems '
                'with gradient terms',

    # sets the root dir for finding packages as src
    package_dir={'': 'src'},

    # find all packages in passed dir
    packages=find_packages('src'),

    python_requires='>=3.10',   # tomllib, or tomli backport on 3.10

    install_requires=[
        'numpy',
        'pandas',
        'termcolor',
        'matplotlib',
        'scipy',
        'tomli; python_version < "3.11"',
    ],

    extras_require={
        'tests': ['pytest'],
    },

    # $ blowrate <command>, or $ python -m blowrate
    entry_points={
        'console_scripts': [
            f'{PACKAGE_NAME} = {PACKAGE_NAME}.cli:main',
        ]},
)
