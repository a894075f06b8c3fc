from layoutprior.cli import main

raise SystemExit(main())
