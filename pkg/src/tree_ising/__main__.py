from tree_ising.cli import main

main()
