#!/usr/bin/env python3
"""
Setup script for a11yfix
"""

from setuptools import setup, find_packages

# Read the README file for the long description
with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

# Read requirements from requirements.txt
with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="a11yfix",
    version="0.1.0",
    description="Static HTML accessibility detection, LLM-based repair with validation gates, and cost reporting",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=[
        "a11yfix", "config", "contrast", "cost", "dataset", "errors", "html_core", "llm",
        "logic", "metrics", "prompts", "repair", "reports", "rules", "schemas", "validator",
    ],
    data_files=[("data", ["data/rule_catalog.yaml", "data/prices.yaml", "data/prompts.yaml", "data/mock_demo.yaml"])],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Developers",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Software Development :: Quality Assurance",
        "Topic :: Text Processing :: Markup :: HTML",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "a11yfix=a11yfix:main",
        ],
    },
    include_package_data=True,
    zip_safe=False,
    keywords="accessibility, wcag, html, llm, repair, command line",
)
