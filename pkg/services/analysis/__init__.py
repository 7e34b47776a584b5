# Analysis service modules

