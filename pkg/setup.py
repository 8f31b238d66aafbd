import os
from setuptools import setup
from setuptools import find_packages

README = open(os.path.join(os.path.dirname(__file__), 'README.rst')).read()


setup(
    name='fqess',
    version=open("fqess/_version.py").readlines()[-1].split()[-1].strip("\"'"),
    packages=find_packages(exclude=['tests']),
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.6',
        'PyYAML>=5',
    ],
    extras_require={
        'test': ['pytest>=6'],
    },
    include_package_data=True,
    license='BSD License',
    description='Full quantum excited-state solver: LCU power iteration with Pauli-coefficient deflation.',
    long_description=README,
    keywords='quantum chemistry excited states power iteration deflation lcu vqd ssvqe',
    entry_points={
        'console_scripts': [
            'fqess = fqess.cli:main',
        ]
    }
)
