int moved;
