# Configuration package

