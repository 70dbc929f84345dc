"""Ethics2Vec recovery for binary and continuous-action agents."""
