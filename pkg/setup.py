from setuptools import setup

with open("README.md", "r") as fh:
    long_description = fh.read()

with open("requirements.txt", "r") as fr:
    requirements = fr.read().splitlines()

setup(
    name='trapstab',
    version='v0.1.0',
    packages=['trapstab'],
    scripts=['scripts/trapstab'],
    license='MIT License',
    description='Floquet stability of Paul-trap ion motion under CSL collapse forcing',
    long_description=long_description,
    long_description_content_type='text/markdown',
    python_requires='>=3.8',
    install_requires=requirements
)
