from photonlink.cli import main

main()
