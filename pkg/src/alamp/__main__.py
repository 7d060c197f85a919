from alamp.harness.cli import main

main()
