from pathlib import Path

from setuptools import setup, find_packages

long_description = (Path(__file__).parent / "README.md").read_text('utf-8').split('# Installation')[0]

setup(
    name="pcadmm",
    version='0.1.0',
    description="Prediction-correction ADMM for separable convex problems with linear coupling",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="GPLv3",
    classifiers=[
        "Programming Language :: Python :: 3",
    ],
    python_requires=">=3.10",
    packages=find_packages(exclude=["tests"]),
    include_package_data=True,
    install_requires=[
        "fire",
        "loguru",
        "numpy==1.26",
        "scipy",
        "tqdm>=4.41.0",
    ],
    entry_points={
        "console_scripts": [
            "pcadmm=pcadmm.__main__:main",
        ]
    },
)
