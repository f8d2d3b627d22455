import os

from setuptools import setup


def get_version():
    # read without importing, the package needs numpy at import time
    scope = {}
    with open(os.path.join("src", "decaycert", "scenario", "version.py")) as f:
        exec(f.read(), scope)
    return scope["__version__"]


def get_requirements():
    with open("requirements.txt") as f:
        lines = [line.strip() for line in f]
    return [line for line in lines if line and not line.startswith("#") and not line.startswith("pytest")]


setup(
    name='decaycert',
    version=get_version(),
    packages=['decaycert', 'decaycert.engine', 'decaycert.numerics', 'decaycert.scenario'],
    package_dir={'': 'src'},
    license='MIT',
    description=
        'Majorant certificates for decay bounds of dissipative evolution problems',
    install_requires=get_requirements(),
    python_requires='>=3.7',
    entry_points={
        'console_scripts': ['decaycert=decaycert.scenario.runner:main'],
    },
    classifiers=[
        'Development Status :: 4 - Beta',

        # Indicate who your project is intended for
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',

        'License :: OSI Approved :: MIT License',

        'Programming Language :: Python :: 3',
    ],
    keywords='differential inequality decay majorant certificate',
)
