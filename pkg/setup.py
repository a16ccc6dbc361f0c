import os
from setuptools import setup

classifiers = [
  'Development Status :: 4 - Beta',
  'Intended Audience :: Science/Research',
  'Intended Audience :: Developers',
  'Operating System :: OS Independent',
  'License :: OSI Approved :: GNU General Public License v2 (GPLv2)',
  'Programming Language :: Python :: 3',
  'Topic :: Scientific/Engineering :: Artificial Intelligence',
  'Topic :: Scientific/Engineering :: Mathematics',
]

with open('README.md') as f:
    long_description = f.read()

# only specify install_requires if not in RTD environment
if os.getenv("READTHEDOCS") == "True":
    INSTALL_REQUIRES = []
else:
    with open("requirements.txt") as f:
        INSTALL_REQUIRES = [line.strip() for line in f.readlines() if line.strip()]

setup(
  name='spenml',
  version='0.1.0',
  description='Structured prediction energy networks for multi-label classification',
  long_description=long_description,
  long_description_content_type='text/markdown',
  url='',
  author='spenml',
  license='GNU General Public License v2.0',
  classifiers=classifiers,
  keywords=['structured prediction', 'energy networks', 'multi-label classification'],
  packages=["spenml",
            "spenml.tests"],
  python_requires='>=3.8',
  install_requires=INSTALL_REQUIRES,
  entry_points={"console_scripts": ["spenml=spenml.cli:main"]},
)
